# Configuración de la aplicación

# Comandos de la línea de órdenes

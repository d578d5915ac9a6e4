# Módulos de cálculo

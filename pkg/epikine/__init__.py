# Paquete epikine

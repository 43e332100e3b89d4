# Физические параметры и гамильтонианы системы

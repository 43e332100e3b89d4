# Геометрический путь: инвариант, поля управления, фазы

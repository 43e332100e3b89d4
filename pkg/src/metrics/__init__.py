# Меры точности и аппроксимация

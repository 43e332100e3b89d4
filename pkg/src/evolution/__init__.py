# Эволюция: уравнение Шрёдингера, уравнение Линдблада, шумы

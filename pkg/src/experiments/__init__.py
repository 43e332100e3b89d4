# Эксперименты, CSV/SVG вывод

# Утилиты симулятора

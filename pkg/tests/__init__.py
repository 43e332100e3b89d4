# Тесты симулятора вентилей на биномиальном коде

# Фоковская алгебра резонатора и кутрита

"""
Исключения движка спекулятивного декодирования.

Все наследуются от ValueError: вызывающий код, который уже ловит
ValueError (парсинг чисел, конфиги), обрабатывает и наши ошибки.
"""


class SpecDecError(ValueError):
    """Базовая ошибка пакета."""


class InputError(SpecDecError):
    """Некорректный вход: токен вне словаря, пустой список logprobsum и т.п."""


class StructuralError(SpecDecError):
    """Нарушена структура дерева: висячий родитель, плохой индекс узла."""


class ConfigError(SpecDecError):
    """Некорректная конфигурация: ширина, глубина, расписание проверок, сетка."""

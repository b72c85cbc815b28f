from abc import ABC, abstractmethod
import math


class Validator(ABC):
    @abstractmethod
    def isValid(self, value):
        pass


class LambdaValidator(Validator):
    def __init__(self, c):
        self.callable = c

    def isValid(self, value):
        try:
            return bool(self.callable(value))
        except (TypeError, ValueError):
            return False


class TypeValidator(Validator):
    def __init__(self, type):
        self.type = type
        super().__init__()

    def isValid(self, value):
        return isinstance(value, self.type)


class IntegerValidator(TypeValidator):
    def __init__(self):
        super().__init__(int)

    def isValid(self, value):
        # bool is a subclass of int, but never a valid count
        return super().isValid(value) and not isinstance(value, bool)


class FloatValidator(TypeValidator):
    def __init__(self):
        super().__init__(float)


class StringValidator(TypeValidator):
    def __init__(self):
        super().__init__(str)


class BoolValidator(TypeValidator):
    def __init__(self):
        super().__init__(bool)


class OrValidator(Validator):
    def __init__(self, *validators):
        self.validators = validators
        super().__init__()

    def isValid(self, value):
        return any(v.isValid(value) for v in self.validators)


class NumberValidator(OrValidator):
    def __init__(self):
        super().__init__(IntegerValidator(), FloatValidator())

    def isValid(self, value):
        return super().isValid(value) and math.isfinite(value)


class RangeValidator(NumberValidator):
    """
    numbers within [minimum, maximum]; either end may be open or missing
    """
    def __init__(self, minimum=None, maximum=None, min_inclusive=True, max_inclusive=True, integer=False):
        super().__init__()
        self.minimum = minimum
        self.maximum = maximum
        self.min_inclusive = min_inclusive
        self.max_inclusive = max_inclusive
        self.integer = integer

    def isValid(self, value):
        if not super().isValid(value):
            return False
        if self.integer and not IntegerValidator().isValid(value):
            return False
        if self.minimum is not None:
            if value < self.minimum or (value == self.minimum and not self.min_inclusive):
                return False
        if self.maximum is not None:
            if value > self.maximum or (value == self.maximum and not self.max_inclusive):
                return False
        return True


class ChoiceValidator(StringValidator):
    def __init__(self, *choices):
        self.choices = choices
        super().__init__()

    def isValid(self, value):
        return super().isValid(value) and value in self.choices

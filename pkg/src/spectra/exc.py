class SpectraError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SpectraError, ValueError):
    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        for name, value in context.items():
            setattr(self, name, value)


class DescriptorError(InputError):
    def __init__(self, string, position, message):
        line = string.count("\n", 0, position) + 1
        column = position - string.rfind("\n", 0, position)
        super_message = (
            f"{message} in descriptor {string!r} at column {column} (position {position})"
        )
        super().__init__(super_message)
        self.string = string
        self.message = message
        self.position = position
        self.line = line
        self.column = column


class ConfigError(InputError):
    def __init__(self, name, position, message):
        super().__init__(f"{message} at position {position}")
        self.name = name
        self.message = message
        self.position = position


class DomainError(InputError):
    def __init__(self, energy, discriminant=None, message=None):
        if message is None:
            message = f"Energy {energy!r} is not in the interior of a spectral band"
            if discriminant is not None:
                message = f"{message} (discriminant {discriminant:.12g})"
        super().__init__(message)
        self.energy = energy
        self.discriminant = discriminant


class HypothesisError(InputError):
    def __init__(self, hypothesis, message=None):
        if message is None:
            message = f"Hypothesis violated: {hypothesis}"
        super().__init__(message)
        self.hypothesis = hypothesis


class ResourceLimitError(InputError):
    def __init__(self, quantity, value, cap):
        super().__init__(f"{quantity} = {value:.6g} exceeds the configured cap {cap:.6g}")
        self.quantity = quantity
        self.value = value
        self.cap = cap


class ConvergenceError(SpectraError, ArithmeticError):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class StepLimitError(ConvergenceError):
    def __init__(self, last_x, max_steps, message=None):
        if message is None:
            message = f"Step budget of {max_steps} exhausted at x = {last_x:.12g}"
        super().__init__(message)
        self.last_x = last_x
        self.max_steps = max_steps


class PrecisionError(ConvergenceError):
    def __init__(self, z, modulus, message=None):
        if message is None:
            message = (
                f"Floquet multipliers at z = {z} are on the unit circle to working precision "
                f"(|multiplier| = {modulus:.15g}); increase Im z or tighten the tolerance"
            )
        super().__init__(message)
        self.z = z
        self.modulus = modulus

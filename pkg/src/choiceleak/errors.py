class InputError(ValueError):
    """Invalid user input: bad counts, ranges, or malformed files."""


class IntegrityError(RuntimeError):
    """Internal consistency check failed (misaligned evidence, broken plan)."""

"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: malformed files, out-of-range ids, invalid parameters."""


class CapacityError(RuntimeError):
    """Request exceeds a size or memory budget."""


class ContractError(RuntimeError):
    """An operation was called on an instance it does not support."""

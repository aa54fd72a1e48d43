"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent user input (shapes, ranges, files)."""


class FilterDivergenceError(ArithmeticError):
    """A one-step predictive covariance lost positive definiteness."""

    def __init__(self, t, detail=""):
        self.t = t
        msg = f"filter divergence at t={t}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SamplerError(RuntimeError):
    """The Gibbs sampler produced an unusable state and was aborted."""

    def __init__(self, message, iteration=None, parameter=None):
        self.message = message
        self.iteration = iteration
        self.parameter = parameter
        parts = [message]
        if parameter is not None:
            parts.append(f"parameter={parameter}")
        if iteration is not None:
            parts.append(f"iteration={iteration}")
        super().__init__(", ".join(parts))

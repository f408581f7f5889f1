class LabError(Exception):
    """
    Base class for all errors raised by the laboratory.
    """
    pass


class ConfigurationError(LabError, ValueError):
    """
    Raised when parameters or a configuration block are invalid.
    """
    pass


class DomainError(LabError, ValueError):
    """
    Raised when an argument lies outside the domain of a function, e.g., a time outside [epsilon, T].
    """
    pass


class ShapeError(LabError, ValueError):
    """
    Raised when vector dimensions disagree.
    """
    pass


class SingularityError(LabError, ArithmeticError):
    """
    Raised when a coefficient that must be non-zero vanishes.
    """
    pass


class DegenerateInputError(LabError, ValueError):
    """
    Raised when the input carries no usable information, e.g., only coincident points.
    """
    pass


class DivergenceError(LabError, ArithmeticError):
    """
    Raised when an optimization produces a non-finite loss.
    """

    def __init__(self, iteration: int, loss: float, layer: int = None, outer: int = None):
        """
        Initializes the error.

        :param iteration: the inner iteration at which the loss became non-finite
        :type iteration: int
        :param loss: the offending loss value
        :type loss: float
        :param layer: the layer (sampling step) that was being optimized, if known
        :type layer: int
        :param outer: the outer iteration, if known
        :type outer: int
        """
        self.iteration = iteration
        self.loss = loss
        self.layer = layer
        self.outer = outer
        super().__init__(self._format())

    def _format(self) -> str:
        result = "Non-finite loss %s at inner iteration %d" % (str(self.loss), self.iteration)
        if self.layer is not None:
            result += ", layer %d" % self.layer
        if self.outer is not None:
            result += ", outer iteration %d" % self.outer
        return result

    def locate(self, layer: int = None, outer: int = None) -> 'DivergenceError':
        """
        Attaches the layer/outer indices and updates the message.

        :param layer: the layer index
        :type layer: int
        :param outer: the outer iteration
        :type outer: int
        :return: itself
        :rtype: DivergenceError
        """
        if layer is not None:
            self.layer = layer
        if outer is not None:
            self.outer = outer
        self.args = (self._format(),)
        return self

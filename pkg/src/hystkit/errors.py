"""Exception hierarchy.

Validation problems derive from ``ValueError``; failures of a numerical
procedure on valid input derive from :class:`NumericalFailure`.
"""


class NumericalFailure(RuntimeError):
    pass


class MomentExhausted(NumericalFailure):
    """Support boundary reached before the residual loop area was cancelled."""


class NoLoop(NumericalFailure):
    """The periodic response is constant; there is no loop to analyse."""


class StepSizeUnderflow(NumericalFailure):
    pass


class SingularAtFrequency(NumericalFailure):
    pass

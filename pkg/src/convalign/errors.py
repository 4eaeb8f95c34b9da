"""Exception hierarchy shared across the toolkit.

Every error the library raises deliberately derives from ConvalignError so
the CLI can map failures to categorized exit codes.
"""


class ConvalignError(Exception):
    """Base class for all toolkit errors."""


# -- transcript ------------------------------------------------------------

class MalformedDocument(ConvalignError):
    """Transcript file violates the expected schema."""


class MultipartyConversation(ConvalignError):
    """Transcript contains speakers beyond the doctor/patient dyad."""


class EmptyCorpus(ConvalignError):
    """An operation that needs conversations received none."""


# -- tokenizer ---------------------------------------------------------------

class VocabTooSmall(ConvalignError):
    """Requested vocabulary cannot hold the base alphabet plus specials."""


# -- dataset -----------------------------------------------------------------

class TooFewPairs(ConvalignError):
    """Not enough positive pairs to split."""


class InsufficientPool(ConvalignError):
    """Negative-sampling pool smaller than the requested draw."""


# -- scorer ------------------------------------------------------------------

class ShapeMismatch(ConvalignError):
    """Model parameters are inconsistent with the scorer configuration."""


class Diverged(ConvalignError):
    """Training loss became non-finite."""


class ProtocolError(ConvalignError):
    """External scorer broke the wire protocol."""


class ScorerTimeout(ConvalignError):
    """External scorer did not answer in time."""


class ProbabilityOutOfRange(ConvalignError):
    """External scorer returned a probability outside [0, 1]."""


# -- eval ----------------------------------------------------------------

class MissingPrediction(ConvalignError):
    """A candidate has no prediction attached."""


class KOutOfRange(ConvalignError):
    """recall@k requested with k outside 1..n."""


# -- alignment -----------------------------------------------------------

class TooShort(ConvalignError):
    """Conversation has fewer sentences than requested intervals."""


class InvalidInterval(ConvalignError):
    """Interval lacks scored sentences from both speakers."""


# -- stats ---------------------------------------------------------------

class RankDeficient(ConvalignError):
    """Design matrix is not full column rank."""


class TooFewRows(ConvalignError):
    """Fewer usable rows than model parameters."""


class Singular(ConvalignError):
    """Mixed-model solve hit a singular system."""


class NonConvergence(ConvalignError):
    """Variance-ratio search failed to converge."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


class InvalidP(ConvalignError):
    """A p-value outside [0, 1] was supplied."""


# -- pipeline / cli --------------------------------------------------------

class MissingInput(ConvalignError):
    """A pipeline stage's input artifact does not exist."""


class ConfigInvalid(ConvalignError):
    """Pipeline configuration failed validation."""


class UpstreamStageFailed(ConvalignError):
    """A prior stage's output is unusable (e.g. config hash mismatch)."""

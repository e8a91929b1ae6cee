"""Exception hierarchy shared across the toolchain.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses: 2 = configuration, 3 = backend, 4 = data invariant.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_DATA = 4


class MqudError(Exception):
    exit_code = EXIT_DATA


class ConfigError(MqudError):
    exit_code = EXIT_CONFIG


class UnknownCommand(ConfigError):
    pass


# --- paper parsing -----------------------------------------------------------

class NoMainFile(MqudError):
    pass


class MissingAbstract(MqudError):
    pass


class UnreadableSource(MqudError):
    pass


class UnknownFigure(MqudError):
    pass


# --- corpus store ------------------------------------------------------------

class UnknownQud(MqudError):
    pass


class DuplicateKey(MqudError):
    pass


class InvariantViolation(MqudError):
    pass


class EmptyExport(MqudError):
    pass


# --- backends ----------------------------------------------------------------

class BackendUnavailable(MqudError):
    exit_code = EXIT_BACKEND


class UnparseableResponse(MqudError):
    exit_code = EXIT_BACKEND


class TypeOutOfVocabulary(MqudError):
    pass


class UnknownLabel(MqudError):
    pass


class VariantRejected(MqudError):
    pass


# --- metrics / diagnostics ---------------------------------------------------

class NoOverlap(MqudError):
    pass


class DegenerateTrace(MqudError):
    pass


class MissingSwap(MqudError):
    pass


class NoSwapCandidate(MqudError):
    pass


class EmptyInput(MqudError):
    pass


class EmptyCorpus(MqudError):
    pass


class ConstantInput(MqudError):
    pass


# --- annotation service ------------------------------------------------------

class UnknownAnnotator(MqudError):
    pass


class IncompletePayload(MqudError):
    pass


class TaskNotPending(MqudError):
    pass


class VocabularyViolation(MqudError):
    pass

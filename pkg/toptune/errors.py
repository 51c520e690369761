class ToptuneError(Exception):
    """Base class for every error raised by toptune."""


class TensorError(ToptuneError):
    pass


class NonFiniteError(TensorError):
    pass


class ContractError(ToptuneError):
    pass


class TopParseError(ToptuneError, ValueError):
    pass


class TokenizerError(ToptuneError):
    pass


class ModelError(ToptuneError):
    pass


class StrategyError(ToptuneError):
    pass


class GrammarError(ToptuneError):
    pass


class DivergenceError(ToptuneError):
    pass


class FreezeViolation(ToptuneError):
    pass


class SearchError(ToptuneError):
    pass


class ConfigError(ToptuneError):
    pass


class DataError(ToptuneError, ValueError):
    pass

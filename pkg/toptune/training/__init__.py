from .config import TrainConfig
from .data import EncodedExample, duplicate_low_data, encode_split
from .evaluate import EvalResult, evaluate, model_predictor, score_predictions
from .trainer import TrainResult, TrainerState, accumulate_gradients, train
from .warm_start import warm_start

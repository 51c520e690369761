from .vocabulary import Vocabulary, add_special_labels, load_vocabulary, save_vocabulary
from .bpe import MergeRules, averaged_init, decode, encode, train_bpe
from .tokenizer import Tokenizer

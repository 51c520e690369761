from .config import ModelConfig
from .attention import (CROSS, DECODER_SELF, ENCODER_SELF, SITE_KINDS, PrefixInjection, Site, SiteBlock,
                        attend_with_prefix, attention_mask)
from .transformer import Batch, ForwardOutput, Seq2SeqTransformer, forward, init_params, make_batch, parameter_shapes
from .beam import Hypothesis, beam_decode, beam_search

"""unitweave: deterministic construction of interleaved speech-unit/text
LM training corpora, fine-tuning templates, packed training files, and a
desk-scale n-gram evaluation stack."""

__version__ = "0.1.0"

from .alignment import AlignedPair, WordAlignment, parse_textgrid, to_unit_spans, validate_pair
from .interleaver import (InterleavedSequence, SegmentChoice, SegmentationPlan,
                          draw_choices, plan_segments, render, verify_roundtrip)
from .packer import PackedBin, pack_ffd, read_corpus, write_corpus
from .quantizer import Codebook, fit_kmeans, quantize
from .scoring import (EvalReport, NGramScorer, attention_modality_profile,
                      corpus_nll, evaluate_eval_suite, ppl_aggregate,
                      probe_label_accuracy, restricted_nll, train_ngram, wer)
from .synthcorpus import SynthConfig, generate, generate_dialogs
from .templates import (DialogSample, EvalSequence, TrainingSample,
                        WordTokenizer, build_eval_sequence, build_s1s2_template,
                        build_sdm_template, build_setup_sequence)
from .vocab import VocabLayout, build_layout, id_to_token, modality_of, unit_to_id

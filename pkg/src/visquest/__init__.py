"""Unknown-object detection and targeted question generation."""

from .errors import (ConfigError, ConflictError, DataError, DomainError,
                     InvalidInputError, InvalidTaxonomyError, NotFoundError,
                     VisquestError)
from .metrics import MetricReport, bleu, corpus_bleu, evaluate_pairs, meteor_lite
from .pipeline import (AcquisitionStats, KBRecord, KnowledgeBase,
                       PipelineConfig, PipelineModels, acquisition_stats,
                       ingest_answer, load_config, load_kb, load_models,
                       new_kb, run_batch, run_pipeline, save_kb)
from .poincare import (EmbeddingConfig, PoincareEmbedding, edge_loss,
                       edge_loss_grads, embed, gradient_check, load_embedding,
                       poincare_distance, save_embedding, train_embeddings)
from .qgen import (DecoderConfig, DecoderParams, QuestionRecord, Vocabulary,
                   cnn_lstm_baseline, decoder_step, detokenize, encode,
                   generate_question, load_decoder, retrieval_baseline,
                   save_decoder, spatial_vector, template_question, tokenize,
                   train_decoder)
from .regions import (ProposalConfig, Region, SegmentMap, iou, nms,
                      proposals_payload, segment_graph, selective_search)
from .saliency import (OtsuResult, SaliencyScore, compute_saliency,
                       load_external_map, mask_image, otsu_threshold,
                       region_saliency, select_target)
from .taxonomy import (TargetWord, Taxonomy, load_taxonomy, save_taxonomy,
                       select_target_word)
from .uncertainty import (CalibrationResult, ClassifierConfig, ClassifierModel,
                          FMeasureResult, SoftmaxDistribution, TimingReport,
                          UnknownVerdict, calibrate_threshold,
                          classify_entropy, classify_least_confident,
                          classify_margin, entropy, extract_features,
                          f_measure, load_classifier, predict,
                          save_classifier, time_classification,
                          train_toy_classifier)

__version__ = "0.1.0"

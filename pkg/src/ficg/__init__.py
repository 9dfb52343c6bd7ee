"""Graph encoders over dialogue history for pitch/energy prediction.

A dialogue's past utterances are arranged into two parallel interaction
graphs, one carrying text features and one carrying speech features, that
share a single topology: a chain of utterance nodes ending in a terminal
interaction node, with each utterance's word nodes feeding the next chain
position. A shared-weight neighborhood-averaging encoder sweeps each graph,
and a small feed-forward head maps the two pooled graph readings plus the
current utterance's text features to (pitch, energy). Gradients are
hand-written reverse mode, checked against central finite differences.
"""

from .data import (DatasetError, DatasetHeader, DialogueRecord, FeatureDims,
                   SynthConfig, TrainingSample, UtteranceRecord,
                   count_speakers, dataset_dims, generate_synthetic,
                   iter_training_samples, load_dataset,
                   load_dataset_with_header, make_training_samples, quantize,
                   quantize_array, save_dataset, validate_record)
from .encoder import (EncoderOutput, EncoderSettings, ProjectionParams,
                      SageParams, encode, encode_with_cache, init_projection,
                      init_sage, project_inputs, sage_update)
from .engine import batch_backward, batch_forward, build_groups, predict_samples
from .gradcheck import check_instance, make_instance, run_gradient_check
from .graphs import (EdgeKind, GraphEdge, GraphNode, InteractionGraph,
                     Modality, NodeKind, TopologyCounts, build_pig, build_sig,
                     check_graph, export_dot, topology_counts)
from .metrics import MetricReport, evaluate, format_report, mae, save_report
from .model import (AblationMode, Checkpoint, HeadParams, ModelParams,
                    backward, forward, init_model, load_checkpoint, mse_loss,
                    save_checkpoint)
from .training import (TrainConfig, TrainingDiverged, TrainResult,
                       format_ablation_table, run_ablation_suite,
                       split_dialogues, train)

__version__ = "0.1.0"

__all__ = [
    "AblationMode", "Checkpoint", "DatasetError", "DatasetHeader",
    "DialogueRecord", "EdgeKind", "EncoderOutput", "EncoderSettings",
    "FeatureDims", "GraphEdge", "GraphNode", "HeadParams", "InteractionGraph",
    "MetricReport", "Modality", "ModelParams", "NodeKind", "ProjectionParams",
    "SageParams", "SynthConfig", "TopologyCounts", "TrainConfig",
    "TrainResult", "TrainingDiverged", "TrainingSample", "UtteranceRecord",
    "backward", "batch_backward", "batch_forward", "build_groups", "build_pig",
    "build_sig", "check_graph", "check_instance", "count_speakers",
    "dataset_dims", "encode", "encode_with_cache", "evaluate", "export_dot",
    "format_ablation_table", "format_report", "forward", "generate_synthetic",
    "init_model", "init_projection", "init_sage", "iter_training_samples",
    "load_checkpoint", "load_dataset", "load_dataset_with_header", "mae",
    "make_instance", "make_training_samples", "mse_loss", "predict_samples",
    "project_inputs", "quantize", "quantize_array", "run_ablation_suite",
    "run_gradient_check", "sage_update", "save_checkpoint", "save_dataset",
    "save_report", "split_dialogues", "topology_counts", "train",
    "validate_record",
]

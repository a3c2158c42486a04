"""miembed: multi-instance visual-semantic embedding toolkit.

Trains a linear map from instance feature vectors into a fixed semantic
label space with hinge ranking losses (whole-image, min-pooled, and
rank-weighted min-pooled), annotates images with top-k labels, localizes
the supporting subregion per label, predicts unseen labels zero-shot,
and evaluates with per-class/overall precision-recall, N+, the
randomized upper-bound protocol, and MAP@k.
"""

__version__ = "0.1.0"

from miembed.semantic_space import (  # noqa: F401
    LabelSpace,
    load_label_space,
    rank_labels_by_distance,
    squared_distance,
)
from miembed.bags import (  # noqa: F401
    InstanceBag,
    RegionGeometry,
    build_bag,
    grid_subregion_geometries,
    passes_region_filter,
)
from miembed.embedding import (  # noqa: F401
    BagDistance,
    EmbeddingModel,
    bag_label_distance,
    embed_instance,
    init_model,
)
from miembed.losses import (  # noqa: F401
    LossConfig,
    LossValueGrad,
    label_rank,
    mie_loss,
    mie_rank_weighted_loss,
    rank_weight,
    whole_image_ranking_loss,
)
from miembed.trainer import TrainConfig, TrainHistory, finite_difference_check, train  # noqa: F401
from miembed.inference import PredictionList, localize_label, predict, zero_shot_predict  # noqa: F401
from miembed.metrics import (  # noqa: F401
    MetricsReport,
    evaluate_annotations,
    map_at_k,
    upper_bound_assignments,
)
from miembed.synth import SynthConfig, SynthResult, generate  # noqa: F401

from ltuscore.ltuscore import LtuScore, utility_score  # noqa
from ltuscore.utils.module_attacker import AttackerSpec  # noqa
from ltuscore.utils.module_data import LabeledDataset, generate_blobs, split_source  # noqa
from ltuscore.utils.module_defender import TrainerConfig  # noqa
from ltuscore.utils.utils import pairwise_accuracy_from_scores, privacy_score  # noqa
from ltuscore.version import __version__  # noqa

"""Fixed-size EUAF networks: univariate fits, KST compositions and width certificates."""

__version__ = "0.1.0"

from .core import (AffineLayer, FeedforwardNetwork, NeuronCount, clip01_fragment,
                   count_intrinsic_neurons, euaf, evaluate_batch, evaluate_network,
                   full_width_count)
from .errors import (ClipRangeError, CompositionError, EuafError, FitFailed, IndexerError,
                     InfeasibleTolerance, NetworkFormatError, NonFiniteError, SubFitError,
                     WidthMismatch)
from .kst import (KstComposition, approximate_multivariate, clip_inner, compose_kst,
                  compute_budget, synthetic_triple, verify_error)
from .search import SearchBudget
from .serialize import deserialize_network, load_network, save_network, serialize_network
from .univariate import (build_indexer, choose_partition, estimate_modulus, fit_point_values,
                         fit_univariate)
from .width_bound import (RationalMatrix, classify_indices, construct_witness, example_family,
                          rref, two_point_gap)

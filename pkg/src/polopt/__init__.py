"""polopt: optimal and near-optimal password composition policies.

Compose policies from positive, negative, or per-password (singleton)
rules; evaluate the induced pick distribution under ranking or
normalization user models; optimize the k-guess attack probability
p(k, A) exactly or from samples; and reproduce the sampling experiment
protocol against real or synthetic datasets.
"""

from .core import Mode, PasswordSpace, Policy, Rule, allowed_set, allows, singleton_rules
from .errors import (
    EmptyDataset,
    EmptyDistribution,
    InvalidMode,
    MissingDictionary,
    NoAllowedPassword,
    OracleExhausted,
    ParseError,
    PoloptError,
    TooManyRules,
    UnknownPassword,
    ZeroMassPolicy,
)
from .exact import (
    OptimizationResult,
    ReduceStats,
    brute_force_optimal,
    guess_and_check,
    iterative_elimination,
    reduce_list,
    sort_and_optimize,
)
from .models import (
    FrequencyDistribution,
    NormalizationModel,
    PolicyModel,
    PreferenceList,
    RankingModel,
    RankingPopulation,
    choose,
    induced_prob,
    load_population,
    load_withcount,
    p_k,
    ranking_from_normalization,
    save_population,
)
from .rules import Dictionary, evaluate, standard_rule_set
from .sampling import (
    SampleOracle,
    SamplingConfig,
    negative_sample_ban_smallest,
    negative_sample_random,
    sample_and_eliminate,
    sample_constant_k,
)

__version__ = "0.1.0"

"""Almost periodic discrete point sets: classification, almost periods, crystal recognition."""

__version__ = "0.1.0"

from .almost_periods import (  # noqa: E402
    AlmostPeriodReport,
    DefectSet,
    besicovitch_defect,
    bijection_match_oracle,
    find_almost_periods,
    find_besicovitch_periods,
    is_bohr_almost_period,
)
from .errors import (  # noqa: E402
    APSetsError,
    CriterionInvalid,
    InconclusiveWindow,
    InputError,
    ParseError,
)
from .generators import GeneratorSpec, generate  # noqa: E402
from .geometry import (  # noqa: E402
    ClassificationReport,
    DifferenceSet,
    build_index,
    classify,
    covering_radius,
    difference_set,
    min_pairwise_gap,
)
from .lattice import (  # noqa: E402
    IdealCrystal,
    Lattice,
    LatticeSubset,
    class_mass_statistic,
    decompose_classes,
    frontier,
    frontier_inequality,
    in_lattice,
    project,
    residue,
)
from .pointset import PointSet, Tolerances, load_points, parse_points, save_points  # noqa: E402
from .recognition import (  # noqa: E402
    PeriodSet,
    RecognitionResult,
    compute_epsilon,
    extract_independent_periods,
    recognize_crystal,
    snap_to_exact_period,
    verify_period,
)

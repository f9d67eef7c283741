"""Modal field modeling, optimal sensing, and online model adaptation."""

from .field import (
    FieldSnapshot,
    SnapshotSeries,
    Workspace,
    downsample,
    gen_damped_oscillation,
    gen_lti_field,
    gen_lti_switched,
    inject_noise,
)
from .dmd import (
    DmdModel,
    RankPolicy,
    SnapshotPair,
    continuous_eigenvalues,
    fit_dmd,
    make_pair,
    reconstruct,
    truncated_svd,
)
from .online import (
    GeneralOnlineState,
    LongTermOnlineState,
    batch_baseline,
    general_model,
    init_general,
    init_longterm,
    longterm_model,
    update_general,
    update_longterm,
)
from .recon import (
    ObservationSet,
    estimate_amplitudes,
    observe,
    placement_objective,
    reconstruct_full,
)
from .placement import (
    Placement,
    SensingRegion,
    block_pivoted_qr,
    brute_force_placement,
    enumerate_candidates,
    pivoted_qr_points,
    place_from_model,
)
from .coverage import (
    DensityMap,
    RobotConfiguration,
    av_sense,
    coverage_cost,
    density_from_temporal,
    lloyd_iterate,
    lloyd_step,
    voronoi_partition,
)
from .fusion import assemble_combined, bilinear_upsample, mean_series_mse, mse

__version__ = "0.1.0"

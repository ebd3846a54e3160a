"""Synthetic aperture imaging of dispersive point targets.

Synthesizes radar measurements of point targets whose reflectivity is
the frequency-dependent backscatter amplitude of a dielectric sphere,
forms migration images with tunable sharpening, predicts the range
shift of imaged targets analytically, and recovers per-target radar
cross-section spectra.
"""

from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    NoTargetsFoundError,
    SingularSystemError,
    ZeroImageError,
)
from .imaging import (
    ImageGrid,
    find_peaks,
    km_image,
    locate_peak,
    normalize_image,
    subregion_zoom,
    tunable_km,
)
from .rangeshift import (
    RangeShift,
    ShiftProblem,
    estimate_range_shift,
    numeric_range_shift,
    range_response,
    range_response_by_parts,
    range_response_power,
)
from .recovery import (
    RcsSpectrum,
    RecoveryReport,
    backprojected_spectrum,
    build_multi_target_system,
    quadratic_smooth,
    rcs_from_spectrum,
    recover_targets,
    solve_reflectivities,
)
from .scattering import (
    ReflectivitySpectrum,
    SphereSpec,
    backscatter_amplitude,
    expansion_coefficients,
    rcs,
    reflectivity_spectrum,
)
from .scene import (
    AcquisitionGeometry,
    DataMatrix,
    Target,
    TargetSet,
    add_noise,
    make_gotcha_geometry,
    synthesize_data,
)

__version__ = "0.1.0"

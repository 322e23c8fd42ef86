"""Audio and sparse-signal declipping with consistent iterative hard thresholding."""

__version__ = "0.1.0"

from .signal_model import (
    ClipMask,
    ClippedObservation,
    TimeSignal,
    clip,
    consistency_cost,
    consistency_map,
    detect_mask,
    is_consistent,
)
from .dictionary import Dictionary, SparseCoeffs, analyze, build_dictionary, hard_threshold, synthesize
from .solver import (
    AdaptiveSchedule,
    FixedStep,
    GoldenSection,
    SolveReport,
    SolverConfig,
    golden_section_step,
    gradient,
    iht_baseline,
    iht_dc,
    iht_dc_adaptive,
)
from .framing import FramePlan, declip_audio, overlap_add, sine_window, split_frames
from .bench import BenchConfig, BenchResult, gen_sparse_signal, isnr, osnr, run_phase_transition, tau_for_isnr

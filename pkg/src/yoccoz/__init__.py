"""Yoccoz puzzles, complex box mappings, enhanced nests and numerical moduli
for polynomial dynamics."""
from .errors import (BoundaryAmbiguity, CheckFailed, ConvergenceError, HorizonExhausted,
                     InconsistentAnchor, InvalidArgument, OutsidePartition,
                     RenormalizationDetected, UnsupportedConfiguration, YoccozError)
from .poly import Polynomial, critical_points, equipotential, evaluate, green_function
from .angles import RationalAngle, angle_orbit, d_tuple
from .rays import landing_point, separating_fixed_cycles, trace_ray
from .partition import BasePartition, build_base_partition
from .puzzle import PuzzlePiece, YoccozPuzzle, realize_piece
from .boxmap import (BoxMapping, audit_box_mapping, extract_box_mapping, is_renormalizable,
                     persistently_recurrent)
from .nest import NestRecord, build_nest
from .modulus import (AnnulusRegion, LogPolarAnnulus, grotzsch_check, halffactor_check, modulus,
                      sublemma_check)

__version__ = "0.1.0"

"""Pick-path planning on labeled roadmaps when every object pose, the
target's included, is known only as a small set of weighted hypotheses."""

from .geometry import Disc, DiscRobot, Placement, PlanarArm, Polygon, Pose2
from .planner import (PLANNER_NAMES, NoSolution, PlanResult, max_success_exact, max_success_greedy,
                      mcr_exact, mcr_greedy, mcr_mlc, osp, plan, reach_probability, survivability)
from .roadmap import GoalSpec, Roadmap, build_roadmap, prepare_roadmap, prm_star_k, roadmap_from_graph
from .scene import (BeliefScene, GroundTruthScene, Hypothesis, ObjectBelief, TrueObject,
                    cluster_hypotheses, generate_hypotheses, sample_ground_truth)

__version__ = "0.1.0"

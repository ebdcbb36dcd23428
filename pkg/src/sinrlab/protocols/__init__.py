from .common import (FOLLOWER, LEADER, NEUTRAL, Context, NoMainRound, ProtocolError, Stars,
                     TokenLost)
from .tpt import exchange_audit, token_passing_transfer, tpt_iterations
from .tree_cutter import potential_leader_election, tree_cutter, tree_cutter_phases
from .tree_grower import tree_grower
from .wakeup import EpochTiming, WakeupResult, check_epoch_alignment, check_status_monotone, wakeup
from .multibroadcast import MultiBroadcastResult, broadcast_budget, choose_star_links, multi_broadcast
from .backbone import (Backbone, adjacent_backbone_pairs, backbone_creation, bb_message_exchange,
                       bb_message_transmit)

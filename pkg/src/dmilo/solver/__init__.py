from ._dmilo import Dmilo
from ._dmilo_pgd import DmiloPgd
from ._dmplug import Dmplug
from ._dmilo_bid import DmiloBid
from ._dmilo_pgd_bid import DmiloPgdBid, conv_step_size, impulse_response

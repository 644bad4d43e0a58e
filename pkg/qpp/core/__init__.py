from .breakdown import tb_coherence, tb_fidelity  # noqa: F401
from .channels import ChannelSpec, Dissipator, builtin_dissipator  # noqa: F401
from .dynamics import simulate_free, simulate_tracked  # noqa: F401
from .operator_space import DensityMatrix, StateVector  # noqa: F401
from .properties import TargetProperty, coherence_property, fidelity_property  # noqa: F401

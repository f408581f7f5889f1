import importlib
import inspect
import logging
from typing import Dict, Optional

from wai.logging import LOGGING_WARNING

from dmilo.api import Solver, ResultWriter, ExperimentConfig, ConfigurationError, BLIND_SOLVER_KINDS, \
    SOLVER_DMILO_PGD, SOLVER_DMILO_PGD_BID
from dmilo.class_lister import list_classes

_logger = logging.getLogger("dmilo.harness.registry")


def _superclass_name(cls) -> str:
    return cls.__module__.split("._")[0] + "." + cls.__name__


def available_plugins(superclass) -> Dict[str, type]:
    """
    Returns the plugins derived from the superclass in the modules that the class lister associates with it,
    keyed by their name().

    :param superclass: Solver or ResultWriter
    :return: the name/class mapping
    :rtype: dict
    """
    result = dict()
    modules = list_classes().get(_superclass_name(superclass), [])
    for module_name in modules:
        module = importlib.import_module(module_name)
        for _, cls in inspect.getmembers(module, inspect.isclass):
            if issubclass(cls, superclass) and not inspect.isabstract(cls):
                result[cls().name()] = cls
    return result


def solver_class(name: str) -> type:
    solvers = available_plugins(Solver)
    if name not in solvers:
        raise ConfigurationError("Unknown solver: %s (available: %s)" % (name, ", ".join(sorted(solvers))))
    return solvers[name]


def writer_class(name: str) -> type:
    writers = available_plugins(ResultWriter)
    if name not in writers:
        raise ConfigurationError("Unknown writer: %s (available: %s)" % (name, ", ".join(sorted(writers))))
    return writers[name]


def solver_from_config(cfg: ExperimentConfig, seed: int, logging_level: Optional[str] = None) -> Solver:
    """
    Creates and initializes the solver of the configuration.

    :param cfg: the configuration
    :type cfg: ExperimentConfig
    :param seed: the seed for the solver's initial latent
    :type seed: int
    :param logging_level: the logging level, overrides solver.logging_level
    :type logging_level: str
    :return: the initialized solver
    :rtype: Solver
    """
    s = cfg.solver
    o = cfg.optim
    if logging_level is None:
        logging_level = LOGGING_WARNING if (s["logging_level"] is None) else s["logging_level"]
    kwargs = {
        "outer_iters": s["outer_iters"],
        "inner_iters": o["inner_iters"],
        "inner_lr": o["inner_lr"],
        "lam": o["lam"],
        "l2_weight": o["l2_weight"],
        "mode": o["mode"],
        "sparse_deviation": s["sparse_deviation"],
        "last_timestep_only": s["last_timestep_only"],
        "seed": seed,
        "beta1": o["beta1"],
        "beta2": o["beta2"],
        "eps": o["eps"],
        "logging_level": logging_level,
    }
    if s["kind"] == SOLVER_DMILO_PGD:
        kwargs["eta"] = s["eta"]
        kwargs["projection"] = s["projection"]
    if s["kind"] in BLIND_SOLVER_KINDS:
        kwargs["kernel_size"] = cfg.task["kernel_size"]
        kwargs["inner_lr_k"] = s["inner_lr_k"]
        kwargs["normalize_kernel"] = s["normalize_kernel"]
        kwargs["kernel_init"] = s["kernel_init"]
    if s["kind"] == SOLVER_DMILO_PGD_BID:
        kwargs["eta_x"] = s["eta_x"]
        kwargs["eta_k"] = s["eta_k"]
        kwargs["projection"] = s["projection"]
    result = solver_class(s["kind"])(**kwargs)
    result.initialize()
    return result

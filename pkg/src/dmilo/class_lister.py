from typing import List, Dict


def list_classes() -> Dict[str, List[str]]:
    return {
        "dmilo.api.Solver": [
            "dmilo.solver",
        ],
        "dmilo.api.ResultWriter": [
            "dmilo.writer",
        ],
    }

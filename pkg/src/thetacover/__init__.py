"""Planted clique-cover recovery via the theta function.

Library layout: graph model and instance generation (`graphs`), dense
symmetric-matrix helpers (`symmat`), dual-certificate pipeline
(`certificate`), first-order conic engine and theta solver (`engine`,
`theta`), comparison baselines (`baselines`), exact combinatorial oracle
(`oracle`), experiment harness (`bench`), HTTP service (`service`,
`schemas`), and the command-line front end (`cli`).
"""

__version__ = "0.1.0"

from .graphs import (  # noqa: F401
    CliquePartition,
    Graph,
    PlantedInstance,
    complement,
    generate_planted,
    hoeffding_bound,
    read_graph,
    recovery_threshold,
    scc_parameter,
    write_graph,
)
from .certificate import (  # noqa: F401
    CertificateReport,
    build_canonical,
    deterministic_recovery,
    extremality_test,
    incoherence_sample,
    project_certificate,
    verify_certificate,
)
from .theta import RecoveryClass, ThetaSolution, classify_recovery, solve_theta  # noqa: F401
from .oracle import clique_cover_number, sandwich_check, stability_number  # noqa: F401

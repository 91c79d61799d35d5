"""Fisher information and error bounds for RIS-aided downlink localization.

Modules
-------
geometry
    Poses, rotations, array layouts, distances and far-field approximations.
channel
    Pathloss, precoding, temporal codes and the noise-free received signal.
fim
    Analytic signal derivatives, FIM assembly, priors, EFIM and estimability.
bounds
    Channel-to-location transformation, UE EFIMs, PEB/OEB and certificates.
cli
    Config files, sweeps, validation subcommands and scenario summaries.
"""

__version__ = "0.1.0"

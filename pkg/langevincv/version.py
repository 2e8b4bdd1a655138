import langevincv


class Version:
    """Version information"""

    name = "langevincv"
    version = langevincv.__version__
    description = "Langevin control variates for MCMC variance reduction"
    doc_url = "https://github.com/WolfgangFahl/pylangevincv"
    updated = "2026-10-18"

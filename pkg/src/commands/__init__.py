from .modes_1d import modes_1d
from .sphere_spectrum import sphere_spectrum
from .effective_spectrum import effective_spectrum
from .bs_scan import bs_scan
from .asymptotics_check import asymptotics_check
from .weyl_count import weyl_count

HANDLERS = {
    "modes-1d": modes_1d,
    "sphere-spectrum": sphere_spectrum,
    "effective-spectrum": effective_spectrum,
    "bs-scan": bs_scan,
    "asymptotics-check": asymptotics_check,
    "weyl-count": weyl_count,
}

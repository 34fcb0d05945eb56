import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent.parent))
from src.attacks.boundary import boundary_attack
from src.attacks.hsja import hsja
from src.attacks.sfa import sfa
from src.attacks.sign_opt import sign_opt
from src.utils.errors import ConfigError

ATTACKS = {
    "ba": boundary_attack,
    "signopt": sign_opt,
    "hsja": hsja,
    "sfa": sfa,
}


def get_attack(name: str):
    """Retourne la fonction d'attaque enregistrée sous `name`"""
    try:
        return ATTACKS[name]
    except KeyError:
        raise ConfigError(f"attaque inconnue: {name} (choix: {', '.join(ATTACKS)})") from None

from knav.property import PropertyManager
import numpy as np
import json


class Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, PropertyManager):
            return o.__dict__()
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            if np.iscomplexobj(o):
                return [[float(v.real), float(v.imag)] for v in o.reshape(-1)]
            return o.tolist()
        if isinstance(o, complex):
            return [o.real, o.imag]
        if callable(getattr(o, "__dict__", None)):
            return o.__dict__()
        return super().default(o)


def dumps(o) -> str:
    return json.dumps(o, cls=Encoder, sort_keys=True, indent=2)

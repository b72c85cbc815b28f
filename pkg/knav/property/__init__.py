from abc import ABC, abstractmethod


class PropertyError(Exception):
    pass


class PropertyValidationError(PropertyError):
    def __init__(self, key, value):
        super().__init__('Invalid value for property "{key}": "{value}"'.format(key=key, value=str(value)))
        self.key = key
        self.value = value


class PropertyWriteError(PropertyError):
    def __init__(self, key):
        super().__init__('Key "{key}" is not writeable'.format(key=key))


class PropertyManager(ABC):
    """
    Mapping-like store of configuration values. Values may themselves be managers, which is how
    the configuration nests one layer per INI section.
    """

    @abstractmethod
    def __getitem__(self, key):
        pass

    @abstractmethod
    def __setitem__(self, key, value):
        pass

    @abstractmethod
    def __contains__(self, key):
        pass

    @abstractmethod
    def keys(self):
        pass

    def __dict__(self):
        return {k: self[k] for k in self.keys()}

    def readonly(self):
        return PropertyReadOnly(self)


class PropertyLayer(PropertyManager):
    def __init__(self, **values):
        self.values = dict(values)

    def __getitem__(self, key):
        return self.values[key]

    def __setitem__(self, key, value):
        self.values[key] = value

    def __contains__(self, key):
        return key in self.values

    def keys(self):
        return list(self.values.keys())


class PropertyDelegator(PropertyManager):
    def __init__(self, pm: PropertyManager):
        self.pm = pm

    def __getitem__(self, key):
        return self.pm[key]

    def __setitem__(self, key, value):
        self.pm[key] = value

    def __contains__(self, key):
        return key in self.pm

    def keys(self):
        return self.pm.keys()


class PropertyReadOnly(PropertyDelegator):
    def __setitem__(self, key, value):
        raise PropertyWriteError(key)


class PropertyValidator(PropertyDelegator):
    """
    checks values against per-key validators, on write and on demand; keys without a validator pass
    """

    def __init__(self, pm: PropertyManager, validators=None):
        super().__init__(pm)
        self.validators = {} if validators is None else dict(validators)

    def validate(self, key, value):
        validator = self.validators.get(key)
        if validator is not None and not validator.isValid(value):
            raise PropertyValidationError(key, value)

    def validateAll(self):
        for key in self.keys():
            self.validate(key, self[key])

    def __setitem__(self, key, value):
        self.validate(key, value)
        super().__setitem__(key, value)


class PropertyStack(PropertyManager):
    """
    Read view over prioritized layers; priority 0 wins. Writes go to a layer, never to the stack.
    """

    def __init__(self):
        # (priority, layer), kept sorted by priority
        self.layers = []

    def addLayer(self, priority: int, pm: PropertyManager):
        self.layers.append((priority, pm))
        self.layers.sort(key=lambda entry: entry[0])

    def __getitem__(self, key):
        for _, layer in self.layers:
            if key in layer:
                return layer[key]
        raise KeyError(key)

    def __setitem__(self, key, value):
        raise PropertyWriteError(key)

    def __contains__(self, key):
        return any(key in layer for _, layer in self.layers)

    def keys(self):
        # first seen in priority order
        result = []
        for _, layer in self.layers:
            result.extend(k for k in layer.keys() if k not in result)
        return result

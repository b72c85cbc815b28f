from knav.property import PropertyStack, PropertyLayer, PropertyValidator, PropertyValidationError
from knav.config.error import ConfigError
from knav.config.defaults import defaultConfig
from knav.config.file import FileConfig
from knav.config.validators import configValidators, crossValidators
from pathlib import Path


class Config(PropertyStack):
    """
    Sectioned configuration: command-line overrides (priority 0) over the configuration file (1)
    over the built-in defaults (2). Keys are addressed per section, ``config.section("mpc")["q_weight"]``.
    """

    def __init__(self, file: Path = None):
        super().__init__()
        self.overrides = PropertyLayer()
        self.fileConfig = FileConfig(file)
        layers = [
            self.overrides,
            self.fileConfig,
            defaultConfig,
        ]
        for i, l in enumerate(layers):
            self.addLayer(i, l)

    @property
    def files(self):
        return self.fileConfig.files

    def section(self, name: str) -> PropertyStack:
        if name not in defaultConfig:
            raise KeyError(name)
        stack = PropertyStack()
        for priority, layer in self.layers:
            if name in layer:
                stack.addLayer(priority, layer[name])
        return stack

    def override(self, section: str, key: str, value):
        if section not in defaultConfig or key not in defaultConfig[section]:
            raise ConfigError("{0}.{1}".format(section, key), "unknown option")
        if section not in self.overrides:
            self.overrides[section] = PropertyLayer()
        self.overrides[section][key] = value

    def validateConfig(self):
        for name, validators in configValidators.items():
            validator = PropertyValidator(self.section(name), validators)
            try:
                validator.validateAll()
            except PropertyValidationError as e:
                raise ConfigError("{0}.{1}".format(name, e.key), 'invalid value "{0}"'.format(e.value))
        for name, description, check in crossValidators:
            if not check(self.section(name)):
                raise ConfigError(name, description)
        return self

    def __dict__(self):
        return {name: self.section(name).__dict__() for name in defaultConfig.keys()}

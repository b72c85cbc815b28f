_versionstring = "0.3.1"
knav_version = "v{0}".format(_versionstring)

ALIASES = {'str': 'string', 'int': 'integer', 'float': 'number', 'bool': 'boolean',
           'list': 'array', 'dict': 'object'}


def normalize_type(type_name):
    return ALIASES.get(type_name, type_name)

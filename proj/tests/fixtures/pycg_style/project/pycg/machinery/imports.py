# SPDX-License-Identifier: Apache-2.0
"""Import graph bookkeeping."""
import os


class ImportManager(object):
    def __init__(self):
        self.import_graph = dict()
        self.current_module = ""
        self.input_file = ""

    def set_pkg(self, input_pkg):
        self.mod_dir = input_pkg

    def create_node(self, name):
        if name in self.import_graph:
            raise ImportManagerError("Can't create a node a second time")
        self.import_graph[name] = {"filename": "", "imports": set()}
        return self.import_graph[name]

    def get_node(self, name):
        if name in self.import_graph:
            return self.import_graph[name]

    def set_filepath(self, node_name, filename):
        if not isinstance(filename, str):
            raise ImportManagerError("Invalid filename")
        node = self.get_node(node_name)
        if not node:
            raise ImportManagerError("Can't set filepath on a nonexistent node")
        node["filename"] = os.path.abspath(filename)

    def create_edge(self, dest):
        if not dest or not isinstance(dest, str):
            raise ImportManagerError("Invalid node name")
        node = self.get_node(self.current_module)
        if not node:
            raise ImportManagerError("Can't add edge to a non existing node")
        node["imports"].add(dest)

    def set_current_mod(self, name, fname):
        self.current_module = name
        self.input_file = os.path.abspath(fname)


class ImportManagerError(Exception):
    pass

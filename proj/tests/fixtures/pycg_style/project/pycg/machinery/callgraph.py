# SPDX-License-Identifier: Apache-2.0
"""Caller to callee edges between fully qualified function names."""


class CallGraph(object):
    def __init__(self):
        self.cg = {}
        self.modnames = {}

    def add_node(self, name, modname=""):
        if not isinstance(name, str):
            raise CallGraphError("Only string node names allowed")
        if name not in self.cg:
            self.cg[name] = set()
            self.modnames[name] = modname

    def add_edge(self, src, dest):
        self.add_node(src)
        self.add_node(dest)
        self.cg[src].add(dest)

    def get_node(self, name):
        return self.cg.get(name)

    def get(self):
        return self.cg


class CallGraphError(Exception):
    pass

# SPDX-License-Identifier: Apache-2.0
"""Graph model for call flow diagrams."""


class Node:
    def __init__(self, token, line_number, parent=None):
        self.token = token
        self.line_number = line_number
        self.parent = parent


class Variable:
    def __init__(self, token, points_to):
        self.token = token
        self.points_to = points_to

    def point_to_node(self):
        return isinstance(self.points_to, Node)


class Call:
    def __init__(self, token, owner_token=None):
        self.token = token
        self.owner_token = owner_token

    def matches_variable(self, variable):
        if variable.point_to_node():
            if variable.token == self.owner_token:
                return variable.points_to
        return None

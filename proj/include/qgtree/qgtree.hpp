#pragma once

#include "qgtree/error.hpp"
#include "qgtree/tree.hpp"
#include "qgtree/potential.hpp"
#include "qgtree/transfer.hpp"
#include "qgtree/charfn.hpp"
#include "qgtree/spectrum.hpp"
#include "qgtree/diophantine.hpp"
#include "qgtree/harness.hpp"
#include "qgtree/io.hpp"

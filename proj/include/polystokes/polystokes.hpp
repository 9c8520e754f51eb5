#pragma once

#include "error.hpp"
#include "mesh.hpp"
#include "voronoi.hpp"
#include "quadrature.hpp"
#include "polybasis.hpp"
#include "vem_local.hpp"
#include "assembly.hpp"
#include "divfree.hpp"
#include "solver.hpp"
#include "harness.hpp"

#pragma once

#include "plap/asymptotics.hpp"
#include "plap/delaunay.hpp"
#include "plap/error.hpp"
#include "plap/flux.hpp"
#include "plap/geometry.hpp"
#include "plap/io.hpp"
#include "plap/mesh.hpp"
#include "plap/predicates.hpp"
#include "plap/radial.hpp"
#include "plap/solver.hpp"
#include "plap/sweep.hpp"

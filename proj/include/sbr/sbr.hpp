#pragma once

#include "sbr/bvh.hpp"
#include "sbr/error.hpp"
#include "sbr/geometry.hpp"
#include "sbr/mie.hpp"
#include "sbr/obj.hpp"
#include "sbr/output.hpp"
#include "sbr/parallel.hpp"
#include "sbr/po.hpp"
#include "sbr/shapes.hpp"
#include "sbr/sweep.hpp"
#include "sbr/transport.hpp"
#include "sbr/vec3.hpp"

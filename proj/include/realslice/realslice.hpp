#pragma once

#include "realslice/types.hpp"
#include "realslice/expr.hpp"
#include "realslice/catalog.hpp"
#include "realslice/slicer.hpp"
#include "realslice/roots.hpp"
#include "realslice/export.hpp"
#include "realslice/verify.hpp"

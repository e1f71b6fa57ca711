#ifndef CEL_CEL_HPP
#define CEL_CEL_HPP

#include "cel/error.hpp"
#include "cel/numeric.hpp"
#include "cel/dag.hpp"
#include "cel/model.hpp"
#include "cel/dsl.hpp"
#include "cel/engine.hpp"
#include "cel/conditions.hpp"
#include "cel/estimands.hpp"
#include "cel/scenario.hpp"
#include "cel/validation.hpp"
#include "cel/condition_numeric.hpp"

#endif  // CEL_CEL_HPP

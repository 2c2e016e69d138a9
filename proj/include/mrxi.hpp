#ifndef MRXI_HPP
#define MRXI_HPP

#include "mrxi/config.hpp"
#include "mrxi/criteria.hpp"
#include "mrxi/forward.hpp"
#include "mrxi/gaussian.hpp"
#include "mrxi/grid.hpp"
#include "mrxi/objective.hpp"
#include "mrxi/optimize.hpp"
#include "mrxi/random.hpp"
#include "mrxi/sequential.hpp"
#include "mrxi/tv.hpp"

#endif  // MRXI_HPP

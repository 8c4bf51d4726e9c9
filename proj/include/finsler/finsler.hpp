#pragma once

#include "finsler/error.hpp"
#include "finsler/jet.hpp"
#include "finsler/autodiff.hpp"
#include "finsler/metric_expr.hpp"
#include "finsler/structure.hpp"
#include "finsler/tensor.hpp"
#include "finsler/sampling.hpp"
#include "finsler/cartan.hpp"
#include "finsler/comparison.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/laws.hpp"
#include "finsler/metric_file.hpp"
#include "finsler/report.hpp"

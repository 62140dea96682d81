#pragma once

#include "kipm/ipm.hpp"
#include "kipm/kkt.hpp"
#include "kipm/linalg.hpp"
#include "kipm/model.hpp"
#include "kipm/svm.hpp"

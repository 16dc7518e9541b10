#pragma once

#include "dualfusion/errors.hpp"
#include "dualfusion/evaluation.hpp"
#include "dualfusion/fusion_net.hpp"
#include "dualfusion/geometry.hpp"
#include "dualfusion/io.hpp"
#include "dualfusion/merge.hpp"
#include "dualfusion/model.hpp"
#include "dualfusion/pipeline.hpp"
#include "dualfusion/pseudo_label.hpp"
#include "dualfusion/segregation.hpp"
#include "dualfusion/simulator.hpp"

#pragma once

#include "docparse/error.hpp"
#include "docparse/text.hpp"
#include "docparse/html.hpp"
#include "docparse/table_grid.hpp"
#include "docparse/table_merge.hpp"
#include "docparse/image.hpp"
#include "docparse/idtp.hpp"
#include "docparse/layout.hpp"
#include "docparse/metrics.hpp"
#include "docparse/reward.hpp"
#include "docparse/config.hpp"
#include "docparse/report.hpp"
#include "docparse/pipeline.hpp"

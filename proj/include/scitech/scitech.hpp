#pragma once

#include "scitech/common.hpp"
#include "scitech/vecfile.hpp"
#include "scitech/ingest.hpp"
#include "scitech/textproc.hpp"
#include "scitech/embed.hpp"
#include "scitech/reduce.hpp"
#include "scitech/cluster.hpp"
#include "scitech/keywords.hpp"
#include "scitech/linker.hpp"
#include "scitech/analytics.hpp"
#include "scitech/config.hpp"
#include "scitech/pipeline.hpp"
#include "scitech/selection.hpp"
#include "scitech/server.hpp"
#include "scitech/fixture.hpp"

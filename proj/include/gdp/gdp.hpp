#pragma once

#include "gdp/classifier.hpp"
#include "gdp/clustering.hpp"
#include "gdp/config.hpp"
#include "gdp/dataset.hpp"
#include "gdp/embeddings.hpp"
#include "gdp/errors.hpp"
#include "gdp/evaluation.hpp"
#include "gdp/generation.hpp"
#include "gdp/graph.hpp"
#include "gdp/ingestion.hpp"
#include "gdp/llm.hpp"
#include "gdp/pipeline.hpp"
#include "gdp/prompts.hpp"
#include "gdp/text.hpp"

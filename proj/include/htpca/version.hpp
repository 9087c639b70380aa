#pragma once

#define HTPCA_VERSION_MAJOR 0
#define HTPCA_VERSION_MINOR 1
#define HTPCA_VERSION_PATCH 0
#define HTPCA_VERSION "0.1.0"

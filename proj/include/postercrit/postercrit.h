/* C interface to the postercrit engine. All strings are UTF-8. Strings
 * returned through out-parameters are owned by the caller and released with
 * pc_free. On failure the functions return a nonzero status and the message
 * is available from pc_last_error() on the same thread. */
#ifndef POSTERCRIT_H
#define POSTERCRIT_H

#include <stddef.h>

#if defined(__GNUC__)
#define PC_API __attribute__((visibility("default")))
#else
#define PC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pc_status {
    PC_OK = 0,
    PC_ERR_PARSE = 1,
    PC_ERR_VALIDATION = 2,
    PC_ERR_NOT_FOUND = 3,
    PC_ERR_KIND_MISMATCH = 4,
    PC_ERR_GENERATION = 5,
    PC_ERR_SCHEMA = 6,
    PC_ERR_STATE = 7,
    PC_ERR_BACKEND = 8,
    PC_ERR_IO = 9,
    PC_ERR_ARGUMENT = 10,
    PC_ERR_INTERNAL = 11
} pc_status;

typedef struct pc_engine pc_engine;
typedef struct pc_document pc_document;

PC_API const char* pc_last_error(void);
PC_API const char* pc_status_name(pc_status status);
PC_API void pc_free(char* s);

/* config_path may be NULL for defaults. */
PC_API pc_status pc_engine_new(const char* config_path, pc_engine** out);
/* Overrides one "section.key" setting, e.g. "backend.kind" = "scripted:fixtures/cafe". */
PC_API pc_status pc_engine_set(pc_engine* engine, const char* key, const char* value);
PC_API void pc_engine_free(pc_engine* engine);

PC_API pc_status pc_document_parse(const char* text, pc_document** out);
PC_API pc_status pc_document_serialize(const pc_document* doc, char** out);
/* JSON list of {"first","second","area"}. */
PC_API pc_status pc_document_overlaps(const pc_document* doc, double min_fraction, char** out_json);
PC_API void pc_document_free(pc_document* doc);

/* Brief pages are text files or PNG page images. Assets go to <out_dir>/assets
 * unless backend.assets is set. */
PC_API pc_status pc_run(pc_engine* engine, const char* const* brief_paths, size_t brief_count, const char* draft_path,
                 const char* out_dir);
PC_API pc_status pc_ingest_templates(pc_engine* engine, const char* corpus_dir, const char* index_path, size_t* out_count,
                              char** out_warnings_json);
PC_API pc_status pc_query_themes(pc_engine* engine, const char* index_path, const char* tone, const char* color, int k,
                          char** out_json);
/* Applies an item id or "conclusion:<unit_id>" from a run directory. Theme
 * refs need template_id plus index_path and corpus_dir; without template_id
 * the ranked choices are returned instead and *out_is_choices is set to 1. */
PC_API pc_status pc_apply(pc_engine* engine, const char* run_dir, const char* ref, const char* template_id,
                   const char* index_path, const char* corpus_dir, char** out_json, int* out_is_choices);
/* Serves the HTTP API until SIGINT or SIGTERM. on_ready may be NULL. */
PC_API pc_status pc_serve(pc_engine* engine, void (*on_ready)(int port, void* user), void* user);

#ifdef __cplusplus
}
#endif

#endif

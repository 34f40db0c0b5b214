/* Classifies a WAV file with a trained model.
 *
 *   cc classify.c -I../include -L../../../target/release -lser_ffi -lm -lpthread -ldl
 *   ./a.out model.cfg weights.serw clip.wav
 */
#include <stdio.h>
#include <stdlib.h>

#include "ser.h"

static int check(SerStatus s) {
    if (s != SER_STATUS_OK) {
        const char *msg = ser_last_error();
        fprintf(stderr, "error %d: %s\n", (int)s, msg ? msg : "?");
        return 1;
    }
    return 0;
}

int main(int argc, char **argv) {
    if (argc != 4) {
        fprintf(stderr, "usage: %s model.cfg weights.serw clip.wav\n", argv[0]);
        return 2;
    }
    SerModel *model = NULL;
    if (check(ser_model_from_config(argv[1], &model))) return 1;
    if (check(ser_model_load_weights(model, argv[2]))) goto fail;

    size_t c, h, t, k;
    if (check(ser_model_shape(model, &c, &h, &t, &k))) goto fail;
    SerFeature kind = h == 40 ? SER_FEATURE_LMS : SER_FEATURE_LMSDDC;

    size_t len = 0;
    float *features = malloc(c * h * t * sizeof(float));
    if (check(ser_extract_features_wav(argv[3], kind, features, c * h * t, &len))) goto fail;

    float *probs = malloc(k * sizeof(float));
    if (check(ser_model_predict_proba(model, features, 1, probs, k))) goto fail;
    for (size_t i = 0; i < k; i++) printf("class %zu: %.4f\n", i, probs[i]);

    free(features);
    free(probs);
    ser_model_free(model);
    return 0;
fail:
    ser_model_free(model);
    return 1;
}
